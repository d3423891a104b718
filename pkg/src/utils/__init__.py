"""
Shared helpers for PVBat-Sizer."""
