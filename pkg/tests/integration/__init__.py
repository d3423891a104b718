"""
Integration tests package for PVBat-Sizer.
"""
