"""Service-layer modules for the run lifecycle, timing and real-data scoring."""
