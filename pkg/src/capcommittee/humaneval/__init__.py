"""Human-rating study service: sessions, Glicko-2 tournament ratings, and
statistical analysis, backed by an append-only event log."""
