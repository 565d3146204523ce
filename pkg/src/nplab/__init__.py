"""Neural-network solvers for parabolic and Hamilton-Jacobi PDEs."""

__version__ = "0.1.0"
