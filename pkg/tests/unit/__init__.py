"""
Unit tests package for PVBat-Sizer.
"""
