"""High-level locomotion controller and kinematic simulator for
quasi-static multilegged robots, with a teleoperation service."""

__version__ = "0.1.0"
