"""
Command-line surface: pydantic models and sub-commands
"""
