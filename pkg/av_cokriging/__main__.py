from av_cokriging.cli import main

raise SystemExit(main())
