"""Learned gating between Pure Pursuit and Follow-the-Gap for head-to-head
racing under LiDAR impairments, with a sampling MPC baseline."""

__version__ = "0.1.0"
