from .figures import KINDS, FigureSpec, SchemaError, Table, build_figure, load_table, render

__version__ = "0.1.0"

__all__ = [
    "KINDS",
    "FigureSpec",
    "SchemaError",
    "Table",
    "build_figure",
    "load_table",
    "render",
    "__version__",
]
