from noncoercive.lorentz import INFINITY, LorentzIndex, dist_to_bounded, lorentz_quasinorm
from noncoercive.mesh import RadialMesh
from noncoercive.profiles import InverseRadiusProfile
import sys
import time


def benchmark(name, function, times):
    start = time.time()
    for i in range(times):
        value = function()
    end = time.time()
    print("{} = {}".format(name, value))
    print("Average in {} runs: {}.".format(times, (end - start) / times))


cells = int(sys.argv[1])
times = int(sys.argv[2])
sampled = RadialMesh.geometric(2, 1.0, cells, 1e-9).lorentz_sample(InverseRadiusProfile(1.0))

benchmark("weak norm (exact)", lambda: lorentz_quasinorm(sampled, LorentzIndex(2, INFINITY)), times)
benchmark("weak norm (quadrature)",
          lambda: lorentz_quasinorm(sampled, LorentzIndex(2, INFINITY), method='quadrature'), times)
benchmark("L^(2,1) norm", lambda: lorentz_quasinorm(sampled, LorentzIndex(2, 1)), times)
benchmark("distance to L^inf", lambda: dist_to_bounded(sampled, 2), times)
