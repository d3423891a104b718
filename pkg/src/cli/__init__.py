"""
Command-line surface for PVBat-Sizer."""
