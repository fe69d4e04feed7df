"""Figure rendering for shrinkreg CSV outputs."""

from .render import SchemaError, render, render_risk_curves, render_shrink_factors

__all__ = ["SchemaError", "render", "render_risk_curves", "render_shrink_factors"]
