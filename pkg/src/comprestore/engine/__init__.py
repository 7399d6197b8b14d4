"""Training, evaluation, ablation and reporting."""
