"""Evaluation harness: technical scores, de-anonymisation, information loss."""
