import os

from setuptools import setup, find_packages

about = {}

here = os.path.abspath(os.path.dirname(__file__))
with open(os.path.join(here, 'noncoercive', '__version__.py')) as f:
    exec(f.read(), about)

with open(os.path.join(here, 'README.md'), encoding='UTF-8') as f:
    long_description = f.read()


setup(
    name='noncoercive',
    version=about['__version__'],
    author='...',
    author_email='...',
    description='Truncation schemes for noncoercive quasilinear Dirichlet and obstacle problems.',
    long_description=long_description,
    long_description_content_type='text/markdown',
    license='MIT',
    url='...',
    packages=find_packages(exclude=['tests', 'resources', 'benchmarks']),
    entry_points={
        'console_scripts': ['noncoercive=noncoercive.cli:cli',],
    },
    package_data={},
    python_requires='>=3.7',
    setup_requires=[],
    install_requires=[
        'numpy>=1.17',
        'scipy>=1.3',
        'xxhash>=1.3.0',
        'Click>=7.0',
    ],
    extras_require={
        'tests': ['hypothesis>=4.0'],
        'docs': ['sphinx'],
    },
    include_package_data=True,
    classifiers=[
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python',
        'Programming Language :: Python :: 3.7',
        'Programming Language :: Python :: 3.8',
        'Topic :: Scientific/Engineering :: Mathematics',
        'Operating System :: POSIX :: Linux',
    ]
)
