"""Wrapper induction: landmark extraction rules learned from labeled pages."""
