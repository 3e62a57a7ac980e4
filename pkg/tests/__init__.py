"""
Test suite for gridob.

Covers domain enumeration, the chain engine, both obstruction complexes,
sign assignments, witness families, configuration and the command line.
Property-based tests use hypothesis; slow sweeps carry the ``slow`` marker.
"""
