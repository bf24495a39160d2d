"""
Setup script for the CGN Classifier Toolkit
Handles installation and dependency management
"""

import sys
import subprocess
from importlib import import_module
from pathlib import Path

REQUIREMENTS = Path(__file__).with_name("requirements.txt")


def check_python_version():
    """Check if Python version is compatible (graphlib needs 3.9)"""
    if sys.version_info < (3, 9):
        print("Error: Python 3.9 or higher is required")
        print(f"Current version: {sys.version}")
        return False
    return True


def read_requirements():
    lines = REQUIREMENTS.read_text().splitlines()
    return [line.strip() for line in lines if line.strip() and not line.startswith("#")]


def install_dependencies():
    """Install required dependencies"""
    print("Installing dependencies...")
    for dep in read_requirements():
        try:
            print(f"Installing {dep}...")
            subprocess.check_call([sys.executable, "-m", "pip", "install", dep])
            print(f"✓ {dep} installed successfully")
        except subprocess.CalledProcessError as e:
            print(f"✗ Failed to install {dep}: {e}")
            return False
    return True


def create_directories():
    """Create output directories"""
    for directory in ["results", "logs"]:
        Path(directory).mkdir(parents=True, exist_ok=True)
        print(f"✓ Created directory: {directory}")


def verify_installation():
    """Verify that all components import"""
    print("Verifying installation...")
    ok = True
    for module in ["numpy", "scipy", "pandas", "sklearn"]:
        try:
            imported = import_module(module)
            print(f"✓ {module} {imported.__version__} is available")
        except ImportError:
            print(f"✗ {module} is not available")
            ok = False

    if Path("main.py").exists():
        print("✓ Command-line entry point found")
    else:
        print("✗ main.py not found")
        ok = False
    return ok


def main():
    """Main setup function"""
    print("=" * 50)
    print("CGN Classifier Toolkit - Setup")
    print("=" * 50)

    if not check_python_version():
        return False

    if not install_dependencies():
        print("\nSetup failed during dependency installation")
        return False

    create_directories()

    if not verify_installation():
        print("\nSetup completed with warnings")
        return False

    print("\n" + "=" * 50)
    print("Setup completed successfully!")
    print("=" * 50)
    print("\nTo run an experiment:")
    print("  python main.py run --dataset-path iris.csv --class-variable species --structure bw")
    print("\nTo run the tests:")
    print("  python -m unittest discover tests")
    return True


if __name__ == "__main__" and len(sys.argv) > 1:
    # Invoked by a build frontend (pip/setuptools); metadata lives in pyproject.toml
    from setuptools import setup
    setup()
elif __name__ == "__main__":
    success = main()
    if not success:
        sys.exit(1)
