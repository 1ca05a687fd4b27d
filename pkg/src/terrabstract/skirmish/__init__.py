"""Differing-objectives skirmishes played on a waypoint graph."""
