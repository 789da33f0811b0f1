"""Fairness-aware adapter finetuning and equity-scaled evaluation at desk scale."""
