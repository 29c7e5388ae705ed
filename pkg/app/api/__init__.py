"""API routes for the FastAPI application."""
