"""Multi-band, multi-hop LoRaWAN discrete-event simulator."""

__version__ = "0.1.0"
