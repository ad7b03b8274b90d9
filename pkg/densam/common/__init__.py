"""Shared plumbing: logging, environment validation, schemas and file I/O"""
