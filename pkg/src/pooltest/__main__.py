from pooltest.cli import main

main()
