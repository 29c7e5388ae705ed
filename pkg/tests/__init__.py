"""Test package for the FastAPI application."""
