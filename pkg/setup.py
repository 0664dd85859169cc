from pathlib import Path

from setuptools import find_packages, setup

requirements = [
    line.strip()
    for line in Path(__file__).with_name('requirements.txt').read_text().splitlines()
    if line.strip() and not line.startswith('#')
]

setup(
    name='calibrated-projection',
    version='0.1.0',
    description='Calibrated projection confidence intervals for moment (in)equality models',
    long_description=Path(__file__).with_name('README.md').read_text(encoding='utf-8'),
    long_description_content_type='text/markdown',
    package_dir={'': 'scripts'},
    packages=find_packages('scripts'),
    py_modules=['run_projection'],
    python_requires='>=3.8',
    install_requires=requirements,
    extras_require={'dev': ['pytest>=7.0.0']},
    entry_points={'console_scripts': ['calproj=run_projection:cli_main']},
)
