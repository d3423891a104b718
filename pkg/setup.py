from setuptools import setup, find_packages

setup(
    name="pvbat_sizer",
    version="0.1.0",
    description="Joint sizing and operation of DC-coupled PV-battery systems with convex loss models",
    author="Your Name",
    author_email="your.email@example.com",
    url="https://github.com/username/PVBat-Sizer",
    packages=find_packages(include=["src", "src.*"]),
    include_package_data=True,
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.23",
        "scipy>=1.9",
        "pandas>=1.5",
        "cvxpy>=1.4",
        "clarabel>=0.6",
        "psutil>=5.9.5",
        "python-dotenv>=1.0.0",
        "pyyaml>=6.0",
    ],
    extras_require={
        "dev": [
            "pytest",
            "pytest-cov",
            "flake8",
            "black",
            "mypy",
            "isort",
        ],
    },
    entry_points={
        "console_scripts": [
            "pvbat-sizer=src.__main__:main",
        ],
    },
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
    ],
)
