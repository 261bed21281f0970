from setuptools import setup, find_packages

setup(
    name="convssm-edges",
    version="0.1.0",
    description="Training-free edge detection with a convolutional state-space scanner, Wind Erosion filtering and a memristor-crossbar accelerator model",
    author="Research Community",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    install_requires=[
        "numpy>=1.22.0",
        "scipy>=1.8.0",
        "scikit-image>=0.19.0",
        "Pillow>=9.0.0",
        "pyyaml>=6.0",
        "click>=8.1.0",
        "rich>=13.0.0",
        "python-dotenv>=1.0.0",
    ],
    extras_require={
        "test": [
            "pytest>=7.4.0",
            "pytest-cov>=4.1.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "convssm-edges=convssm_edges.cli:main",
        ],
    },
    python_requires=">=3.8",
)
