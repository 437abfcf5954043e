"""Spike-window frame selection and WFST decoding for CTC posteriors."""

__version__ = "0.1.0"
