"""Node state machine and the event loop that drives it."""
