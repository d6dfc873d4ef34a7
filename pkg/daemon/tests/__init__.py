# Test package for the AWDL engine daemon
