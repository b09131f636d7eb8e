#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""The setup script."""
import os
import re
from setuptools import setup, find_packages


with open(os.path.join('lipretract', '__init__.py')) as ver_file:
    for line in ver_file:
        if line.startswith('__version__'):
            version=re.sub("'", "", line[line.index("'"):]).strip()

with open('README.rst') as readme_file:
    readme = readme_file.read()

with open('HISTORY.rst') as history_file:
    history = history_file.read()

requirements = ['numpy>=1.20',
                'scipy>=1.7',
                'tqdm']

setup_requirements = [ ]

test_requirements = [ ]

setup(
    author="Lipretract Developers",
    author_email='lipretract@example.org',
    classifiers=[
        'Development Status :: 2 - Pre-Alpha',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: BSD License',
        'Natural Language :: English',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Topic :: Scientific/Engineering :: Mathematics',
    ],
    description="Numerical lab for Lipschitz retractions onto "
                "diamond compacta in Banach spaces",
    install_requires=requirements,
    license="BSD license",
    long_description=readme + '\n\n' + history,
    include_package_data=True,
    keywords='lipretract',
    name='lipretract',
    packages=find_packages(include=['lipretract']),
    package_dir={'lipretract': 'lipretract'},
    scripts=['lipretract/lipretractrun.py'],
    setup_requires=setup_requirements,
    test_suite='tests',
    tests_require=test_requirements,
    version=version,
    zip_safe=False,
)
