"""
Tests package for the vrlab laboratory.
"""
