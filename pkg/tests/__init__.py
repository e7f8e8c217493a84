"""Test suite for the edsynth package."""
