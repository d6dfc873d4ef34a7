"""Frame transport: the simulated channel, pcap files and port adapters."""
