"""
Scenario documents shipped with laneshare.
"""
