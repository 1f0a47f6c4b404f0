from .data_grid import DataGrid          # noqa: F401
from .stats_display import StatsDisplay  # noqa: F401
from .split_form import SplitForm  # noqa: F401
from .report_table import ReportTable  # noqa: F401
from .window_table import WindowTable  # noqa: F401
