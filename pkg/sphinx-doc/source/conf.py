# Configuration file for the Sphinx documentation builder.
#
# This file only contains a selection of the most common options. For a full
# list see the documentation:
# http://www.sphinx-doc.org/en/master/config

# -- Path setup --------------------------------------------------------------

import os
import sys
sys.path.insert(0, os.path.abspath('../..'))


# -- Project information -----------------------------------------------------

about = {}
with open(os.path.join(os.path.dirname(os.path.abspath(__file__)), '../../noncoercive/__version__.py')) as f:
    exec(f.read(), about)

project = 'noncoercive'
copyright = '2026, noncoercive developers'
author = 'noncoercive developers'

# The full version, including alpha/beta/rc tags
release = about['__version__']


# -- General configuration ---------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.viewcode',
]

templates_path = ['_templates']

exclude_patterns = []

pygments_style = 'colorful'


# -- Options for HTML output -------------------------------------------------

html_theme = 'alabaster'

html_static_path = ['_static']
