"""
DAB verifier application shell: configuration, command line and services
"""
__version__ = "1.0.0"
