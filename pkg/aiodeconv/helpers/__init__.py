"""Init file for helpers directory."""
