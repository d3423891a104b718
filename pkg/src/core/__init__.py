"""
Core modules for PVBat-Sizer."""
