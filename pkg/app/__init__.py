"""
gapedge - eigenvalues born at spectral band edges of perturbed periodic operators
"""
__version__ = "0.1.0"
__description__ = "Floquet band edges, gap-eigenvalue asymptotics and a finite-difference oracle"
