"""Unit test package for lowmix."""
