"""Compare the numba and numpy kernel backends on realistic workloads."""

from wheelnav.bench import main

if __name__ == "__main__":
    main()
