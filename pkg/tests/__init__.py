"""
Test suite for laneshare.
"""
