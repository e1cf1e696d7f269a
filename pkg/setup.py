import ast
import re

from setuptools import find_packages, setup


_version_re = re.compile(r'__version__\s+=\s+(.*)')


with open('vvb_learn/__init__.py', 'rb') as f:
    version = str(
        ast.literal_eval(_version_re.search(f.read().decode('utf-8')).group(1))
    )


with open('README.md', encoding='utf-8') as f:
    long_description = f.read()


requirements = [
    'numpy>=1.20',
    'scipy>=1.5',
    'SQLAlchemy>=1.4,<2',
]


setup(
    name='vvb-learn',
    version=version,
    description=(
        'Simulated vector vortex beam images and the classifiers '
        'that read them'
    ),
    license='MIT',
    long_description=long_description,
    long_description_content_type='text/markdown',
    classifiers=[
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering :: Physics',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
    ],
    keywords='optics polarization vortex-beam poincare-sphere pca svm cnn',
    packages=find_packages(exclude=['tests']),
    install_requires=requirements,
    entry_points={'console_scripts': ['vvb = vvb_learn.cli:main']},
    python_requires='>=3.8'
)
