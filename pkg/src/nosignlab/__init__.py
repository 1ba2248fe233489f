"""No-sign obstacle problem lab: solvers, projections and free-boundary diagnostics."""
