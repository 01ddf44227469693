"""
Numerical Kernel and Support Modules
Jets, matrix kernels, root finding, tolerances, errors and configuration
"""
