"""
densam - Test Suite

Test package initialization.
"""
