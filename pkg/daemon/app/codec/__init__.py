"""Bit-exact codec for AWDL action frames, TLVs and data frames.

Everything in this package is a pure function of its inputs.
"""
