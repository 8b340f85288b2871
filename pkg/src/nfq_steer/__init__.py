"""Neural fitted Q iteration for minimum-time steering-position control."""
