"""
Test fixtures package for PVBat-Sizer.
"""
