"""
Environment check for the UMBLT toolkit
Run before the first experiment to confirm the install
"""

import importlib.util
import sys
from pathlib import Path


def print_status(message, status):
    """Print colored status message"""
    symbols = {"success": "✓", "error": "✗", "warning": "⚠"}
    colors = {"success": "\033[92m", "error": "\033[91m", "warning": "\033[93m"}
    reset = "\033[0m"

    symbol = symbols.get(status, "•")
    color = colors.get(status, "")
    print(f"{color}{symbol}{reset} {message}")


def check_python_version():
    """Check Python version"""
    version = sys.version_info
    if version.major == 3 and version.minor >= 9:
        print_status(f"Python {version.major}.{version.minor}.{version.micro}", "success")
        return True
    else:
        print_status(f"Python {version.major}.{version.minor} (Need 3.9+)", "error")
        return False


def check_file_structure():
    """Check if all required files exist"""
    print("\n📁 Checking File Structure:")

    required_files = [
        "umblt/main.py",
        "umblt/schemas.py",
        "umblt/models/mesh.py",
        "umblt/models/coefficients.py",
        "umblt/models/phantom.py",
        "umblt/services/assembly_service.py",
        "umblt/services/solver_service.py",
        "umblt/services/pipeline_service.py",
        "umblt/services/uq_service.py",
        "umblt/services/report_service.py",
        "umblt/utils/config.py",
        "umblt/utils/logger.py",
        "umblt/utils/errors.py",
        "requirements.txt",
        ".env.example",
    ]

    all_exist = True
    for file_path in required_files:
        exists = Path(file_path).exists()
        print_status(file_path, "success" if exists else "error")
        if not exists:
            all_exist = False

    return all_exist


STACK = [
    ("numpy", True),
    ("scipy", True),
    ("pydantic", True),
    ("pydantic_settings", True),
    ("dotenv", True),
    ("loguru", True),
    ("matplotlib", False),
    ("pytest", False),
]


def check_packages():
    """Import every package of the stack; matplotlib and pytest are optional"""
    print("\n📦 Checking Python Packages:")

    missing = [name for name, needed in STACK if needed and importlib.util.find_spec(name) is None]
    for name, needed in STACK:
        if importlib.util.find_spec(name) is not None:
            print_status(name, "success")
        else:
            print_status(f"{name} (" + ("NOT INSTALLED" if needed else "optional, not installed") + ")",
                         "error" if needed else "warning")
    return not missing


def check_sparse_solve():
    """1D Dirichlet Laplacian through SuperLU; residual must vanish"""
    try:
        import numpy as np
        import scipy.sparse as sp
        import scipy.sparse.linalg as spla

        n = 50
        A = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csc")
        b = np.ones(n)
        x = spla.splu(A).solve(b)
        residual = float(np.linalg.norm(A @ x - b))
    except Exception as e:
        print_status(f"Sparse solve failed: {e}", "error")
        return False
    ok = residual < 1e-10
    print_status(f"SuperLU residual {residual:.1e}", "success" if ok else "error")
    return ok


def check_scipy_version():
    """BiCGSTAB needs the rtol keyword (scipy >= 1.12)"""
    try:
        import scipy
        major, minor = (int(v) for v in scipy.__version__.split(".")[:2])
    except Exception as e:
        print_status(f"Cannot read scipy version: {e}", "warning")
        return False
    if (major, minor) >= (1, 12):
        print_status(f"scipy {scipy.__version__}", "success")
        return True
    print_status(f"scipy {scipy.__version__} (Need 1.12+)", "error")
    return False


def check_env_file():
    """Check if .env file exists"""
    print("\n⚙️ Checking Configuration:")

    if Path(".env").exists():
        print_status(".env file exists", "success")
        return True
    else:
        print_status(".env file missing (defaults apply; copy .env.example to override)", "warning")
        return False


def main():
    """Run all checks"""
    print("=" * 60)
    print("🔍 UMBLT System Verification")
    print("=" * 60)

    print("\n🐍 Checking Python Version:")
    python_ok = check_python_version()

    files_ok = check_file_structure()
    packages_ok = check_packages()
    scipy_ok = check_scipy_version() and check_sparse_solve() if packages_ok else False
    check_env_file()

    print("\n" + "=" * 60)
    print("📊 Summary:")
    print("=" * 60)

    if python_ok and files_ok and packages_ok and scipy_ok:
        print_status("System is ready!", "success")
        print("\nNext steps:")
        print("1. Run: python test_components.py")
        print("2. Run: pytest")
        print("3. Run: python -m umblt --experiment 1")
        return True
    else:
        print_status("System has configuration issues", "error")
        print("\nPlease fix the errors above before proceeding.")
        return False


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
