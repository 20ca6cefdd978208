"""Stackelberg STL synthesis toolkit."""
