from textual.containers import Vertical, Horizontal
from textual.widgets import Input, Button, Label
from textual.message import Message


class SplitForm(Vertical):
    """Enter a hybrid split ratio to preview the per-window tile cut."""

    class Submit(Message):
        """Posted when *Apply* is pressed with a ratio that parses."""
        def __init__(self, ratio: float) -> None:
            self.ratio = ratio
            super().__init__()

    def compose(self):
        yield Label("Split ratio (tile path share, 0..1)")
        self.ratio_input = Input(placeholder="1.0", id="ratio")
        yield self.ratio_input
        self.error_label = Label("", id="ratio_error")
        yield self.error_label
        yield Horizontal(
            Button("Apply", id="apply", variant="success"),
            Button("All tiles", id="all_tiles", variant="primary"),
            Button("All scalar", id="all_scalar", variant="default"),
            id="split_buttons",
        )

    async def on_button_pressed(self, event: Button.Pressed) -> None:
        button_id = event.button.id
        if button_id == "all_tiles":
            ratio = 1.0
        elif button_id == "all_scalar":
            ratio = 0.0
        else:
            try:
                ratio = float(self.ratio_input.value or "1.0")
            except ValueError:
                self.error_label.update("[red]not a number[/red]")
                return
            if not 0.0 <= ratio <= 1.0:
                self.error_label.update("[red]ratio must be between 0 and 1[/red]")
                return
        self.error_label.update("")
        self.ratio_input.value = f"{ratio:g}"
        self.post_message(self.Submit(ratio))
