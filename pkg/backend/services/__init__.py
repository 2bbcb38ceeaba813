"""
Services module for the DAB verifier
"""
