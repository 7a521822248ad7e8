"""Planar shared-control teleoperation testbed with a learned arbitration policy."""

__version__ = "0.1.0"
