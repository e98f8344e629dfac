"""Desk-scale simulator of a privacy-preserving cross-chain relay
network: cryptographic transaction pipeline, certified relay nodes
with pluggable source-obfuscation forwarding, in-process chain
simulations, and an experiment harness."""

__version__ = "0.1.0"
