"""Secure uplink from a movable-antenna ground station to a LEO constellation."""

__version__ = "0.1.0"
