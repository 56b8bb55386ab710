from noncoercive.assembly import DiscreteFunction, RhsFunctional, assemble_jacobian, assemble_residual
from noncoercive.fields import ModelData, model_field
from noncoercive.mesh import PlanarMesh, RadialMesh
import numpy as np
import sys
import time


def benchmark(mesh, times):
    field = model_field(ModelData(np.eye(mesh.N), p=2.5), N=mesh.N)
    rhs = RhsFunctional.from_load(mesh, 1.0)
    u = DiscreteFunction.interpolate(mesh, lambda x: 1 - np.linalg.norm(x, axis=1) ** 2)

    start = time.time()
    for i in range(times):
        assemble_residual(field, u, u, rhs)
    residual_end = time.time()
    for i in range(times):
        assemble_jacobian(field, u, u)
    end = time.time()
    print("{} with {} cells".format(type(mesh).__name__, mesh.num_cells))
    print("Residual average in {} runs: {}.".format(times, (residual_end - start) / times))
    print("Jacobian average in {} runs: {}.".format(times, (end - residual_end) / times))


cells = int(sys.argv[1])
times = int(sys.argv[2])
benchmark(RadialMesh.uniform(3, 1.0, cells), times)
benchmark(PlanarMesh.disc(1.0, max(1, int(np.sqrt(cells)))), times)
