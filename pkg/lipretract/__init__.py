# -*- coding: utf-8 -*-

"""Top-level package for Lipschitz Retraction Lab."""

__author__ = """Lipretract Developers"""
__email__ = 'lipretract@example.org'
__version__ = '0.1.0'
