"""Election, synchronization, neighbour table and data path state machines."""
