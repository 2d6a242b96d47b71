from facetflow.cli import main

main()
