"""Self-consistency checking of batch-mode accelerator kernels."""
