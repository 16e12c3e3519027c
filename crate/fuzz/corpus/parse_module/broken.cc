fn f( {