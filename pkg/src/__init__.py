"""
PVBat-Sizer: PV, battery and converter sizing with convex loss relaxations."""
