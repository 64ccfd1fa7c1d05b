"""Provide the sparse and dense linear algebra kernels, eigensolvers and file
helpers used by the coarsening code."""
