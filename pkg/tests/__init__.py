"""
Tests package for PVBat-Sizer.
"""
