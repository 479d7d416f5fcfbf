"""Gridiron: VDC workloads with bandwidth demands from per-VM cloud traces.

The pipeline turns a per-VM trace (creation/deletion times, cores, memory,
deployment grouping) into a virtual-datacenter workload where every VDC has
all-to-all inter-VM vlinks sized by a bandwidth-per-core unit, optionally
peak-capped, and validates the result by replaying it onto a datacenter
model with server-uplink bandwidth accounting.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND  # noqa: F401
