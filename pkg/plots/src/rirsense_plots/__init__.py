"""Figure rendering for rirsense CSV outputs."""

from .csvio import SCHEMAS, SchemaError, Table, load_table
from .render import KINDS, PlotJob, render

__version__ = "0.1.0"
