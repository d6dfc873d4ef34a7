"""Multi-node scenario simulation over the shared virtual channel."""
